"""Maximum final charge on energy graphs with a bounded battery."""
