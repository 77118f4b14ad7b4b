"""Shared utilities for Replica Signature Detector."""
