__name__ = "greendc"
__version__ = "0.1.0"
__description__ = "Profit maximization for geographically dispersed green data centers"
__url__ = "https://github.com/civodlu/greendc"
__author__ = "Civodlu"
__email__ = "civodlu@gmail.com"
__license__ = "MIT"
