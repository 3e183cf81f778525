class ConfigError(ValueError):
    """Invalid model, stream, policy or experiment configuration."""
