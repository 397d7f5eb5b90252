"""Entry point for python -m posetryon."""

from posetryon.cli import main

if __name__ == "__main__":
    main()
