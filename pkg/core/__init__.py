"""Shared utilities: exceptions, abstract run records and the worker pool."""
