"""init file

"""
