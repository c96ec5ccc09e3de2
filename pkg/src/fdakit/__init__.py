"""Fourier domain adaptation and weather-augmentation toolkit for
traffic-light detection datasets."""

__version__ = "0.1.0"
