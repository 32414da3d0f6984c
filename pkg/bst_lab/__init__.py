"""Geometric BST lab: Greedy, its variants and the pattern-avoidance machinery around it."""
