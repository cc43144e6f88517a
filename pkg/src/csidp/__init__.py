"""Differentially private release of CSI spectrogram features.

The pipeline: synthetic CSI windows -> subcarrier-averaged STFT magnitude
-> bounded per-frequency normalization -> L2 clipping -> importance-driven
per-block budget allocation -> blockwise Gaussian noise -> RDP accounting,
plus an empirical leakage harness (membership and attribute inference).
"""

__version__ = "0.1.0"
