"""Fit noisy autocorrelation traces and deconvolve the link bandwidth."""

from modaldisp import fit_autocorrelation, link_bandwidth
from modaldisp.pulseanalysis import ac_ratio, synthetic_trace

b2b = fit_autocorrelation(synthetic_trace("sech2", 1.2 * ac_ratio("sech2"), snr_db=30, seed=1))
out = fit_autocorrelation(synthetic_trace("sech2", 9.0 * ac_ratio("sech2"), snr_db=20, seed=2))
for name, f in (("back-to-back", b2b), ("after link", out)):
    print(f"{name:13s} shape {f.shape:10s} pulse FWHM {f.pulse_fwhm:6.3f} ps  rmse {f.rmse:.4f}")
print(f"link -3 dB bandwidth {link_bandwidth(b2b, out):.1f} GHz")
