"""EMF-aware MU-MIMO beamforming in RIS-aided downlinks."""
