"""HTTP service around the solver package."""
