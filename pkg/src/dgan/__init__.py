"""Desk-scale simulator for distributed GAN training with local discriminators and a server-side generator."""

__version__ = "0.1.0"
