"""
Settings, logging, errors and formula parsing
"""
