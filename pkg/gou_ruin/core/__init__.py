"""Settings, exception bases and random streams."""
