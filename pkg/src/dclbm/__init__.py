"""Degree-corrected latent block model biclustering."""
