# nsflow test suite
