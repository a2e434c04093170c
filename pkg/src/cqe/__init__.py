"""Closed-form solution sets of convex quadratic equations and their use in
Hamilton-Jacobi equations and quadratic programming."""
