"""
Configuration, parameter file and command tests
"""
