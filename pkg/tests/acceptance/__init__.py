"""
Slow end-to-end runs (XDIFF_RUN_SLOW=1)
"""
