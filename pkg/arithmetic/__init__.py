"""Primes, factorisation, primitive roots and compensated summation."""
