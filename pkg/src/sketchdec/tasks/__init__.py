"""Desk-scale benchmark tasks with crafted backends and checkable outcomes."""
