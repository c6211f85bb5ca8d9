"""
Image I/O, synthetic corpus and metric tests
"""
