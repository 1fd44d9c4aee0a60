"""End-to-end datapath and preset tests."""
