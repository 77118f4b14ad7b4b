"""Replica Signature Detector -- adversarial input detection from distorted-replica signatures."""
