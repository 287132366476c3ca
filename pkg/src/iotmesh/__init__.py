"""Desk-scale IoT robotics mesh: a WAMP-style router with REST bridging,
simulated robot, services and reflex-measurement nodes, and the calendar
reminder applications running over them."""

__version__ = "0.1.0"
