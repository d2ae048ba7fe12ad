from arslack.cli import main

raise SystemExit(main())
