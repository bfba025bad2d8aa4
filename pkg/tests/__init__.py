"""
Test Suite
Tests for the sinc filterbank adaptation toolkit
"""
