"""emergent-pde package."""
