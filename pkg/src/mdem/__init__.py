"""Meshfree solvers for 2D finite-strain hyperelasticity.

Mixed deep energy method (mDEM), deep energy method (DEM) and strong-form
PINN losses on Delaunay-integrated point clouds, with a finite-element
reference solver.
"""
__version__ = "0.1.0"
