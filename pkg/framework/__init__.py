"""Run infrastructure: run log, config validation and output-path confinement."""
