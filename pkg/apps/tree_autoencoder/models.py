from django.db import models


# Training alternates between two phases, each updating one parameter set.
class Phase(models.TextChoices):
    WEIGHTS = 'W', 'Weights'        # composition/decoding weights, argmax structure
    STRUCTURE = 'S', 'Structure'    # selector query, Gumbel-sampled structure


# How the structure selector turns merge scores into a choice
class SelectionMode(models.TextChoices):
    SAMPLE = 'sample', 'Gumbel sample'    # straight-through Gumbel-Softmax
    ARGMAX = 'argmax', 'Argmax'           # deterministic best pair
    LEFT = 'left', 'Always first pair'    # sequential, left-branching special case
