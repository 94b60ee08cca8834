"""emergent-pde test suite."""
