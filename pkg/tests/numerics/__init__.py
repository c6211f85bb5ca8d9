"""
Grid, influence function, stepper and stability tests
"""
