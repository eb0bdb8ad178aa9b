"""FastAPI service wrapping the toolkit; the CLI drives the same handlers."""
