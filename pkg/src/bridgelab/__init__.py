"""Modal simulator for the damped extensible suspension-bridge equation."""
