from __future__ import absolute_import

__version__ = "0.3.0"
__author__ = "Mike Odnis"
__email__ = "mike@mikeodnis.dev"
__license__ = "MIT License"
__credits__ = "Markovian feedback stabilization toolkit"
