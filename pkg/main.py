"""
firdiag - Main Entry Point
Diagnose der Diffusionsfreundlichkeit über Fisher-Information und FI-Rate
"""

import sys

from cli.app import DiagnosticsApp

if __name__ == "__main__":
    app = DiagnosticsApp()
    sys.exit(app.run())
