"""chaosveil: image cryptology with SIFT-derived keys, a chaotic 3-cell CNN
keystream and dynamic k-LSB steganography."""

__version__ = "0.1.0"
