"""Expression evaluation workflow."""
