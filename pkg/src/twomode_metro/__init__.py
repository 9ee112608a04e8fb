"""Two-mode quantum metrology with fluctuating particle number."""
