"""Reduced-order grid frequency response with energy-storage primary control."""
