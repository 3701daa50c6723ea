"""Analysis of programs with complementarity constraints and their regularizations."""
