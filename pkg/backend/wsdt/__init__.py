"""
Wavelet-spectrum diffusion transformer for image super-resolution.

The package is a Django app: library code lives in the submodules and the
command-line surface is provided as management commands.
"""
