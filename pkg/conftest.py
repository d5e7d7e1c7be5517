# The package entry point invokes the CLI at import time; it is not a test module.
collect_ignore = ["pyfednas/__main__.py"]
