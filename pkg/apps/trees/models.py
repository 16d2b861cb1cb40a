from django.db import models


# No database tables here: the choices classes name the values used on the
# command line and in reports.
class BaselineKind(models.TextChoices):
    LEFT = 'left', 'Left-branching'            # every merge takes the first pair
    RIGHT = 'right', 'Right-branching'         # every merge takes the last pair
    BALANCED = 'balanced', 'Balanced'          # recursive split at ceil(n/2)
    RANDOM = 'random', 'Random merge order'    # uniform pair per merge step
