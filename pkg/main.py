"""레거시 엔트리 포인트. 실제 구현은 kinetic_fluid_modes 패키지에 있다."""

import sys

from kinetic_fluid_modes.app import main

if __name__ == "__main__":
    sys.exit(main())
