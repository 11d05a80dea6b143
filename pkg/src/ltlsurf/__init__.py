"""Local tangential lifting operators on triangle meshes."""
