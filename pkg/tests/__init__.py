# coarsetk - Test Suite
