# Experiment defaults
