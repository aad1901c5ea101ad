"""Dataset mixing, prompt rendering, reward validation and trainer-facing scoring."""
