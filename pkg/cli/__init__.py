"""
Kommandozeilen-Oberfläche für firdiag
"""

from .app import DiagnosticsApp, main

__all__ = ['DiagnosticsApp', 'main']
