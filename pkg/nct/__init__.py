from dotenv import load_dotenv

# Exports .env into os.environ so BLAS/OpenMP thread variables apply before numpy loads.
load_dotenv()

__version__ = "0.1.0"
