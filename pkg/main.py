"""
Punto de entrada del laboratorio: delega en lab_cli.main.

    python main.py verify --config configs/hermite4_verify.json --out out/
"""

import sys

from lab_cli import main

if __name__ == "__main__":
    sys.exit(main())
