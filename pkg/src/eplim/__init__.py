"""Bipolar Euler-Poisson system and its zero-electron-mass / infinity-ion-mass limits."""
