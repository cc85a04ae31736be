"""Configuration, errors, logging and CLI helpers shared by every package."""
