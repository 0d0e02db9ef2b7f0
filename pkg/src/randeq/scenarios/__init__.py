"""Built-in scenario documents shipped with the package."""
