"""Test suite for the elastack simulator."""
