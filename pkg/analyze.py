import sys
from pathlib import Path
import logging

# Configure logging with more detail
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stdout  # Explicitly write to stdout
)

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.cli.commands import main
from src.config.settings import Settings

if __name__ == "__main__":
    try:
        Settings.validate()
    except ValueError as e:
        print(f"ConfigInvalid: {e}", file=sys.stderr)
        sys.exit(2)
    try:
        sys.exit(main(sys.argv[1:]))
    except KeyboardInterrupt:
        sys.exit(130)
    except Exception as e:
        logging.error(f"Main execution error: {str(e)}", exc_info=True)
        sys.exit(1)
