"""Physical constants in CGS-Gaussian units."""

# Reduced Planck constant [erg*s].  Spin-1 convention: the particle's spin
# angular momentum equals this value unless a config overrides it.
HBAR = 1.054571817e-27
