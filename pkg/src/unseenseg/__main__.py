from unseenseg.cli import main; import sys; sys.exit(main())
