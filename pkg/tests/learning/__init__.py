"""
Gradient, augmented Lagrangian, Adam and training loop tests
"""
