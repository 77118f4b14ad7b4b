"""Core algorithms and experiment orchestration for Replica Signature Detector."""
