"""Test package for Timewise Guardian.""" 