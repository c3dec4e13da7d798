"""Finite-matrix models of noncommutative principal-bundle constructions."""
