"""
Core components of the tax FAVAR toolkit.
"""
