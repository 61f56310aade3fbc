# Logging, validation and error types
