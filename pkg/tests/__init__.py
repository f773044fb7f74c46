"""Test suite for the formal networks workbench."""
