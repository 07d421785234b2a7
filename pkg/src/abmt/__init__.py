"""Multi-agent machine tending: environment, MAPPO training and a HIL bridge."""
